fn main() -> std::process::ExitCode {
    dpplab::cli::main_from(std::env::args_os())
}
