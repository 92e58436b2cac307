fn main() -> std::process::ExitCode {
    aronsson_lab::cli::run(std::env::args_os())
}
