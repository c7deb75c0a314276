mod config;
mod report;
mod run;

fn main() {
    std::process::exit(run::run(std::env::args_os()));
}
