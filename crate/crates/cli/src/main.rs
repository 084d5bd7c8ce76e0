fn main() {
    std::process::exit(nbr_cli::dispatch(std::env::args_os()));
}
