//! Seeded template generator for issue 3: replace a test with a
//! self-contained, compilable program that contains no directive or runtime
//! API usage at all. Templates do trivial scalar/array arithmetic and print
//! the result, so a conforming toolchain compiles and runs them with code 0.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Language;

pub fn generate(language: Language, rng: &mut ChaCha8Rng) -> String {
    let n: u32 = rng.gen_range(8..64);
    let m: u32 = rng.gen_range(2..9);
    let k: u32 = rng.gen_range(1..100);
    let template: u8 = rng.gen_range(0..2);
    match language {
        Language::C => c_program(n, m, k, template),
        Language::Cpp => cpp_program(n, m, k, template),
        Language::Fortran => fortran_program(n, m, k),
    }
}

fn c_program(n: u32, m: u32, k: u32, template: u8) -> String {
    match template {
        0 => format!(
            "#include <stdio.h>\n\nint main(void) {{\n    int buf[{n}];\n    int total = 0;\n    for (int i = 0; i < {n}; ++i) {{\n        buf[i] = i * {m} + {k};\n    }}\n    for (int i = 0; i < {n}; ++i) {{\n        total += buf[i];\n    }}\n    printf(\"total=%d\\n\", total);\n    return 0;\n}}\n"
        ),
        _ => format!(
            "#include <stdio.h>\n\nstatic int step(int value) {{\n    return value * {m} + {k};\n}}\n\nint main(void) {{\n    int value = 1;\n    for (int i = 0; i < {n}; ++i) {{\n        value = step(value) % 9973;\n    }}\n    printf(\"value=%d\\n\", value);\n    return 0;\n}}\n"
        ),
    }
}

fn cpp_program(n: u32, m: u32, k: u32, template: u8) -> String {
    match template {
        0 => format!(
            "#include <iostream>\n#include <vector>\n\nint main() {{\n    std::vector<int> buf({n});\n    int total = 0;\n    for (int i = 0; i < {n}; ++i) {{\n        buf[i] = i * {m} + {k};\n    }}\n    for (int v : buf) {{\n        total += v;\n    }}\n    std::cout << \"total=\" << total << \"\\n\";\n    return 0;\n}}\n"
        ),
        _ => format!(
            "#include <iostream>\n\nstatic int step(int value) {{\n    return value * {m} + {k};\n}}\n\nint main() {{\n    int value = 1;\n    for (int i = 0; i < {n}; ++i) {{\n        value = step(value) % 9973;\n    }}\n    std::cout << \"value=\" << value << \"\\n\";\n    return 0;\n}}\n"
        ),
    }
}

fn fortran_program(n: u32, m: u32, k: u32) -> String {
    format!(
        "program generated\n  implicit none\n  integer :: i, total\n  integer, dimension({n}) :: buf\n  total = 0\n  do i = 1, {n}\n    buf(i) = i * {m} + {k}\n  end do\n  do i = 1, {n}\n    total = total + buf(i)\n  end do\n  print *, 'total=', total\nend program generated\n"
    )
}
