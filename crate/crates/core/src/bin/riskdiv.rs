fn main() {
    std::process::exit(riskdiv::cli::run(std::env::args_os()));
}
