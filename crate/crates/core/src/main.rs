fn main() {
    std::process::exit(hcslab::cli::run(std::env::args_os()));
}
