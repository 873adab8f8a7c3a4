fn main() -> std::process::ExitCode {
    gdco::harness::cli::main_with_args(std::env::args_os())
}
