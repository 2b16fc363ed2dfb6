mod shell {
    use explorer_simenv::shell::*;
    use chrono::{TimeZone, Utc};

    fn vfs() -> Vfs {
        let mut v = Vfs::new().with_executables(&["cat", "date", "ls"]);
        v.insert("/flag.txt", "HTB{x}");
        v.insert("/var/www/html/index.php", "<?php");
        v
    }

    fn run(script: &str) -> String {
        let v = vfs();
        let bl: Vec<String> = vec!["cat".into(), "id".into(), "$(".into()];
        Shell {
            vfs: &v,
            blacklist: &bl,
            cwd: "/var/www/html",
            now: Utc.with_ymd_and_hms(2025, 3, 14, 9, 26, 53).unwrap(),
        }
        .run(script)
    }

    #[test]
    fn lines_and_quotes() {
        // the empty word on line 2 is run as a command named ""
        assert_eq!(run("echo 'b c';echo d\n''\n"), "b c\nd\nsh: 2: : Permission denied\n");
    }

    #[test]
    fn date_formats() {
        assert_eq!(run("date '+%Y-%m-%d'"), "2025-03-14\n");
        assert_eq!(run("date '+%H:%M:%S'"), "09:26:53\n");
        assert_eq!(run("date '+%Q'"), "%Q\n");
    }

    #[test]
    fn globs() {
        assert_eq!(run("/bin/c?t /fl*"), "HTB{x}");
        assert_eq!(run("ls /*.txt"), "/flag.txt\n");
        assert_eq!(run("echo /nomatch*"), "/nomatch*\n");
        assert_eq!(run("echo *"), "index.php\n");
    }

    #[test]
    fn blacklist_and_errors() {
        assert_eq!(run("cat /flag.txt"), "sh: 1: : Permission denied\n");
        assert_eq!(run("/bin/cat /flag.txt"), "sh: 1: : Permission denied\n");
        assert_eq!(run("tac /flag.txt"), "sh: 1: tac: not found\n");
        assert_eq!(run("/bin"), "sh: 1: /bin: Permission denied\n");
        assert_eq!(run("echo 'a"), "sh: 1: Syntax error: Unterminated quoted string\n");
        assert_eq!(run(";"), "sh: 1: Syntax error: \";\" unexpected\n");
    }

    #[test]
    fn normalize_paths() {
        assert_eq!(normalize("/var/www/files/../../../flag.txt"), "/flag.txt");
        assert_eq!(normalize("/../../x"), "/x");
        assert_eq!(normalize("/a/./b/"), "/a/b");
    }
}
