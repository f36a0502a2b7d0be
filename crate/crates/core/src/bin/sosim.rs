use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, record| writeln!(buf, "{}: {}", record.level(), record.args()))
        .init();
    let stdout = std::io::stdout();
    let code = sosim_core::cli::run(std::env::args_os(), &mut stdout.lock());
    std::process::exit(code);
}
