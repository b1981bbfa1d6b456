fn main() -> std::process::ExitCode {
    emod::cli::main()
}
