fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    lagqvi_cli::init_threads();
    std::process::exit(lagqvi_cli::run(std::env::args_os()));
}
