fn main() {
    std::process::exit(voxhomog::cli::main_with_args(std::env::args_os()));
}
