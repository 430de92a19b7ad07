fn main() {
    std::process::exit(posekernel::cli::main_with_args(std::env::args_os()));
}
