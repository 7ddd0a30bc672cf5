fn main() {
    // exit quietly when a pager or `head` closes stdout
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(cm::cli::run(std::env::args_os()));
}
