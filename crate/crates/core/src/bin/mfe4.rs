fn main() {
    std::process::exit(meanfield4::cli::dispatch_env());
}
