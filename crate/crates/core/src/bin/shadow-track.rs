fn main() {
    std::process::exit(shadow_track::cli::main_with_args(std::env::args_os()));
}
