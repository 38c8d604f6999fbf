fn main() {
    std::process::exit(skillex::cli::run(std::env::args_os()));
}
