fn main() {
    std::process::exit(perch::cli::main_with(std::env::args_os()));
}
