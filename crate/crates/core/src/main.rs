fn main() {
    std::process::exit(semiclassical_core::cli::run(std::env::args_os()));
}
