fn main() {
    std::process::exit(chebyqst::cli::run(std::env::args_os()));
}
