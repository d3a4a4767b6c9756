fn main() {
    std::process::exit(hermite_pde_service::cli::run(std::env::args_os()));
}
