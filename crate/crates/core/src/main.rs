fn main() {
    std::process::exit(midistring::cli::cli_main(std::env::args_os()));
}
