fn main() {
    let code = swipt_cli::main_with_args(std::env::args_os());
    std::process::exit(code);
}
