fn main() -> std::process::ExitCode {
    twomode_jc::cli::run()
}
