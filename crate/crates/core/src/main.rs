fn main() -> std::process::ExitCode {
    pdeflow::cli::run()
}
