fn main() {
    // Die quietly on closed pipes (e.g. `olfsearch replay ... | head`)
    // like other line-oriented tools.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    if let Err(e) = olfsearch::run(std::env::args()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
