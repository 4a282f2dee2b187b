fn main() {
    std::process::exit(swarm_hydro::cli::main_with_args(std::env::args_os()));
}
