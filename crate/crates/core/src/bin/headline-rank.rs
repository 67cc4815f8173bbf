use headline_rank::cli;

fn main() {
    cli::init_threads();
    std::process::exit(cli::main_with_args(std::env::args_os()));
}
