fn main() {
    if let Err(e) = jointscl_cli::run(std::env::args_os()) {
        eprintln!("{}", e.to_line());
        std::process::exit(e.exit_code());
    }
}
