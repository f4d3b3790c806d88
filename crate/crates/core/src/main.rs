fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, rec| {
            use std::io::Write;
            writeln!(buf, "level={} target={} {}", rec.level(), rec.target(), rec.args())
        })
        .init();
    std::process::exit(hyperfit::cli::run(std::env::args_os()));
}
