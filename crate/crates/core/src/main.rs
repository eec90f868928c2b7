fn main() {
    std::process::exit(cepml::cli::run(std::env::args_os()));
}
