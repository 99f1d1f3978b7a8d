use std::io::{stderr, stdout};

fn main() {
    let code = ldp_core::cli::main_with_args(std::env::args_os(), &mut stdout(), &mut stderr());
    std::process::exit(code);
}
