//! Fuzz corpus for the command-injection service and an independent
//! oracle for which payloads may legitimately read the flag.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;

// Independent oracle for glob-resolved reads: translate a glob word into a
// regex and test it against a path, never using the emulator's matcher.
fn glob_regex(word: &str) -> Regex {
    let mut re = String::from("^");
    for c in word.chars() {
        match c {
            '*' => re.push_str("[^/]*"),
            '?' => re.push_str("[^/]"),
            c => re.push_str(&regex::escape(&c.to_string())),
        }
    }
    re.push('$');
    Regex::new(&re).unwrap()
}

fn resolves_to(word: &str, path: &str) -> bool {
    let abs = if word.starts_with('/') { word.to_string() } else { format!("/var/www/html/{word}") };
    let mut parts: Vec<&str> = Vec::new();
    for seg in abs.split('/').filter(|s| !s.is_empty() && *s != ".") {
        if seg == ".." {
            parts.pop();
        } else {
            parts.push(seg);
        }
    }
    glob_regex(&format!("/{}", parts.join("/"))).is_match(path)
}

/// True when some word carries an unquoted glob resolving to the cat binary
/// and some word names the flag file.
pub fn glob_flag_read(payload: &str) -> bool {
    let script = format!("date '+{payload}'");
    let mut words = Vec::new();
    let (mut cur, mut quoted, mut globbed) = (String::new(), false, false);
    for c in script.chars() {
        match c {
            '\'' => quoted = !quoted,
            ' ' | '\t' | ';' | '\n' if !quoted => {
                words.push((std::mem::take(&mut cur), globbed));
                globbed = false;
            }
            '*' | '?' if !quoted => {
                globbed = true;
                cur.push(c);
            }
            c => cur.push(c),
        }
    }
    words.push((cur, globbed));
    let cat = words.iter().any(|(w, g)| *g && (resolves_to(w, "/bin/cat") || resolves_to(w, "/usr/bin/cat")));
    let flag = words.iter().any(|(w, _)| resolves_to(w, "/flag.txt"));
    cat && flag
}

const FRAGMENTS: &[&str] = &[
    "'", "'", ";", "\n", " ", " ", "%Y", "%H:%M", "cat", "/bin/cat", "/bin/c?t", "/bin/c*", "/b??/cat", "/*/cat",
    "/bin/?at", "c?t", "*", "?", "/fl*", "/flag.txt", "/fl?g.txt", "/f*", "flag.txt", "../../../flag.txt", "id",
    "$(id)", "`id`", "$(cat /flag.txt)", "ls", "ls /", "echo", "echo hi", "tac", "/bin/ta?", "head", "/bin/h*",
    "nl", "/etc/passwd", "/e*/p*", "sh", "/bin/s?", "|", ">", "&", "{", "-", "+", "\\",
];

const COMMANDS: &[&str] = &[
    "cat", "/bin/cat", "/bin/c?t", "/bin/c*", "/b??/cat", "/*/cat", "/bin/?at", "/*/c?t", "c?t", "/bin/ca?", "/bin/*",
    "tac", "/bin/t?c", "echo", "ls", "/bin/ls", "/bin/l?", "/bin/da?e", "id", "$(id)", "/usr/bin/c?t",
];
const ARGS: &[&str] = &["/flag.txt", "/fl*", "/fl?g.txt", "/f*", "/*", "flag.txt", "../../../flag.txt", "/etc/passwd", "/e*/p*", ""];
const SEPARATORS: &[&str] = &[";", "\n", "
", " ", "|", "&&", ""];

/// Half free-form fragment soup, half `<prefix>'<sep><cmd> <arg><sep>'`
/// shaped breakouts so the corpus reaches the interesting paths.
pub fn payload(rng: &mut ChaCha8Rng) -> String {
    if rng.random_bool(0.5) {
        let n = rng.random_range(1..=9);
        return (0..n).map(|_| *FRAGMENTS.choose(rng).unwrap()).collect();
    }
    let mut p = String::new();
    if rng.random_bool(0.5) {
        p.push_str(FRAGMENTS.choose(rng).unwrap());
    }
    if rng.random_bool(0.8) {
        p.push('\'');
    }
    p.push_str(SEPARATORS.choose(rng).unwrap());
    p.push_str(COMMANDS.choose(rng).unwrap());
    p.push(' ');
    p.push_str(ARGS.choose(rng).unwrap());
    p.push_str(SEPARATORS.choose(rng).unwrap());
    if rng.random_bool(0.8) {
        p.push('\'');
    }
    p
}
