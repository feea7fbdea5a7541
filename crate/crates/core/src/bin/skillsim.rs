fn main() {
    std::process::exit(skillsim::cli::dispatch(std::env::args_os()));
}
