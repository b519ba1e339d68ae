fn main() {
    std::process::exit(swm_gnss::pipeline::cli_main(std::env::args_os()));
}
