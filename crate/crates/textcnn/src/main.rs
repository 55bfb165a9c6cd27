use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TEXTCNN_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let code = textcnn::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    ExitCode::from(code as u8)
}
