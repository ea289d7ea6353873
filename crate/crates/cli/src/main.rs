fn main() {
    std::process::exit(geoptics_cli::main_with_args(std::env::args_os()));
}
