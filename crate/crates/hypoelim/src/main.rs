fn main() {
    std::process::exit(hypoelim::cli::run_from_env());
}
