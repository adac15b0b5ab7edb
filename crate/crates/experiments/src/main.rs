fn main() {
    std::process::exit(lowrank_experiments::cli::main_with_args(std::env::args_os()));
}
