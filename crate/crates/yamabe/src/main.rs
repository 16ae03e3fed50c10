fn main() { std::process::exit(yamabe::cli::run()); }
