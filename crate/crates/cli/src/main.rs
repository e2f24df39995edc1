fn main() {
    let code = physreg_cli::run(std::env::args_os());
    std::process::exit(code);
}
