fn main() {
    std::process::exit(bias_sim::cli::run(std::env::args_os()));
}
