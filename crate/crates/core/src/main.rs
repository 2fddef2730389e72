fn main() -> std::process::ExitCode {
    fairaudit::cli::main_with_args(std::env::args_os())
}
