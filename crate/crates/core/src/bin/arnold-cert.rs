fn main() {
    std::process::exit(arnold_cert::cli::run(std::env::args_os()));
}
