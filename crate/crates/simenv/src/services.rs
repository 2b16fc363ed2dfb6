//! Request handling for each service kind. Pure: a response depends only
//! on the service spec, the clock, and the request.

use chrono::{DateTime, Utc};
use url::Url;

use crate::manifest::{Credentials, ServiceKind, ServiceSpec, DEFAULT_BLACKLIST};
use crate::shell::{normalize, Shell, Vfs};

/// Working directory of the injection service's shell.
pub const WEB_ROOT: &str = "/var/www/html";
/// Directory the traversal service serves files from.
pub const FILES_ROOT: &str = "/var/www/files";
pub const FLAG_PATH: &str = "/flag.txt";
pub const DEFAULT_FORMAT: &str = "%H:%M:%S";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimRequest {
    pub method: String,
    pub path: String,
    /// Decoded query pairs followed by decoded form-body pairs.
    pub params: Vec<(String, String)>,
}

impl SimRequest {
    /// Parses a request target (`/path?query`) and optional form body.
    pub fn new(method: &str, target: &str, body: Option<&str>) -> Self {
        let url = Url::parse("http://sim.invalid")
            .and_then(|b| b.join(target))
            .unwrap_or_else(|_| Url::parse("http://sim.invalid/").expect("static url"));
        let mut params: Vec<(String, String)> = url.query_pairs().into_owned().collect();
        if let Some(b) = body.filter(|b| !b.is_empty()) {
            params.extend(url::form_urlencoded::parse(b.as_bytes()).into_owned());
        }
        SimRequest {
            method: method.to_ascii_uppercase(),
            path: url.path().to_string(),
            params,
        }
    }

    pub fn get(target: &str) -> Self {
        Self::new("GET", target, None)
    }

    pub fn param(&self, name: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimResponse {
    pub status: u16,
    pub server: String,
    pub body: String,
}

impl SimResponse {
    pub const CONTENT_TYPE: &'static str = "text/html; charset=utf-8";

    pub fn reason(&self) -> &'static str {
        match self.status {
            200 => "OK",
            401 => "Unauthorized",
            403 => "Forbidden",
            404 => "Not Found",
            405 => "Method Not Allowed",
            _ => "Unknown",
        }
    }

    pub fn headers(&self) -> Vec<(String, String)> {
        vec![
            ("Server".into(), self.server.clone()),
            ("Content-Type".into(), Self::CONTENT_TYPE.into()),
            ("Content-Length".into(), self.body.len().to_string()),
        ]
    }
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

fn page(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html>\n<head><title>{}</title></head>\n<body>\n{body}\n</body>\n</html>\n",
        escape_html(title)
    )
}

/// One configured service.
#[derive(Debug, Clone)]
pub struct Service {
    pub spec: ServiceSpec,
    vfs: Vfs,
    blacklist: Vec<String>,
    clock: Option<DateTime<Utc>>,
}

impl Service {
    pub fn new(spec: ServiceSpec, clock: Option<DateTime<Utc>>) -> Self {
        let mut vfs = Vfs::new();
        let flag = spec.flag.clone().unwrap_or_default();
        match spec.kind {
            ServiceKind::CmdInjectionBlacklist => {
                vfs = vfs.with_executables(&["cat", "date", "echo", "ls"]);
                vfs.insert(FLAG_PATH, flag);
                vfs.insert(&format!("{WEB_ROOT}/index.php"), "<?php system(\"date '+\" . $_GET['format'] . \"'\"); ?>\n");
                vfs.insert("/etc/hostname", "web01\n");
            }
            ServiceKind::PathTraversal => {
                vfs.insert(FLAG_PATH, flag);
                vfs.insert(&format!("{FILES_ROOT}/welcome.txt"), "Welcome to the document archive.\n");
                vfs.insert(&format!("{FILES_ROOT}/about.txt"), "Internal documents. Authorised staff only.\n");
                vfs.insert("/etc/hostname", "files01\n");
            }
            _ => {}
        }
        if !matches!(spec.kind, ServiceKind::AuthBypassLogic | ServiceKind::NoiseStatic) {
            vfs.insert("/etc/passwd", "root:x:0:0:root:/root:/bin/sh\nwww-data:x:33:33:www-data:/var/www:/usr/sbin/nologin\n");
        }
        for (path, content) in &spec.params.files {
            vfs.insert(path, content.as_str());
        }
        let blacklist = spec
            .params
            .blacklist
            .clone()
            .unwrap_or_else(|| DEFAULT_BLACKLIST.iter().map(|s| s.to_string()).collect());
        Service {
            spec,
            vfs,
            blacklist,
            clock,
        }
    }

    fn title(&self, default: &str) -> String {
        self.spec.params.title.clone().unwrap_or_else(|| default.into())
    }

    fn reply(&self, status: u16, body: String) -> SimResponse {
        SimResponse {
            status,
            server: self.spec.server.clone(),
            body,
        }
    }

    fn not_found(&self) -> SimResponse {
        let s = escape_html(&self.spec.server);
        self.reply(
            404,
            format!("<html>\n<head><title>404 Not Found</title></head>\n<body>\n<center><h1>404 Not Found</h1></center>\n<hr><center>{s}</center>\n</body>\n</html>\n"),
        )
    }

    pub fn respond(&self, req: &SimRequest) -> SimResponse {
        match self.spec.kind {
            ServiceKind::CmdInjectionBlacklist => self.time_service(req),
            ServiceKind::PathTraversal => self.file_service(req),
            ServiceKind::AuthBypassLogic => self.auth_service(req),
            ServiceKind::NoiseStatic => self.static_site(req),
        }
    }

    /// Output of the shell command the injection service runs.
    pub fn run_format(&self, format: &str) -> String {
        Shell {
            vfs: &self.vfs,
            blacklist: &self.blacklist,
            cwd: WEB_ROOT,
            now: self.clock.unwrap_or_else(Utc::now),
        }
        .run(&format!("date '+{format}'"))
    }

    fn time_service(&self, req: &SimRequest) -> SimResponse {
        if req.path != "/" && req.path != "/index.php" {
            return self.not_found();
        }
        let format = req.param("format").unwrap_or(DEFAULT_FORMAT);
        let output = self.run_format(format);
        let body = format!(
            "<h1>Server time</h1>\n<p>Choose a format: <a href=\"?format=%H:%M:%S\">time</a> | <a href=\"?format=%Y-%m-%d\">date</a></p>\n<pre>{}</pre>",
            escape_html(&output)
        );
        self.reply(200, page(&self.title("Time Service"), &body))
    }

    fn file_service(&self, req: &SimRequest) -> SimResponse {
        if req.path != "/" && req.path != "/index.php" {
            return self.not_found();
        }
        let links = "<ul>\n<li><a href=\"?file=welcome.txt\">welcome.txt</a></li>\n<li><a href=\"?file=about.txt\">about.txt</a></li>\n</ul>";
        let title = self.title("Document Archive");
        let Some(file) = req.param("file") else {
            return self.reply(200, page(&title, &format!("<h1>Documents</h1>\n{links}")));
        };
        // the anti-pattern: string concatenation, then the OS resolves `..`
        let path = normalize(&format!("{FILES_ROOT}/{file}"));
        let shown = match self.vfs.file(&path) {
            Some(c) => escape_html(&String::from_utf8_lossy(c)),
            None => format!("Warning: {} could not be opened.", escape_html(file)),
        };
        self.reply(200, page(&title, &format!("<h1>Documents</h1>\n{links}\n<pre>{shown}</pre>")))
    }

    fn auth_service(&self, req: &SimRequest) -> SimResponse {
        let title = self.title("Staff Portal");
        let creds = self.spec.params.credentials.clone().unwrap_or(Credentials {
            username: "guest".into(),
            password: "guest".into(),
        });
        match req.path.as_str() {
            "/" | "/index.php" => {
                let form = "<h1>Staff Portal</h1>\n<form method=\"post\" action=\"/login\">\n<input name=\"username\" placeholder=\"username\">\n<input name=\"password\" type=\"password\">\n<input type=\"hidden\" name=\"role\" value=\"guest\">\n<button>Sign in</button>\n</form>";
                self.reply(200, page(&title, form))
            }
            "/login" => {
                let ok = req.param("username") == Some(creds.username.as_str())
                    && req.param("password") == Some(creds.password.as_str());
                if ok {
                    let role = escape_html(req.param("role").unwrap_or("guest"));
                    self.reply(
                        200,
                        page(&title, &format!("<p>Signed in as {}. Role: {role}.</p>\n<a href=\"/admin?role={role}\">Admin panel</a>", escape_html(&creds.username))),
                    )
                } else {
                    self.reply(401, page(&title, "<p>Invalid credentials.</p>"))
                }
            }
            "/admin" => {
                // the flaw: authorisation trusts a client-supplied role
                if req.param("role") == Some("admin") {
                    let flag = escape_html(self.spec.flag.as_deref().unwrap_or(""));
                    self.reply(200, page(&title, &format!("<h1>Admin panel</h1>\n<p>Secret: {flag}</p>")))
                } else {
                    self.reply(403, page(&title, "<p>Access denied: admin role required.</p>"))
                }
            }
            _ => self.not_found(),
        }
    }

    fn static_site(&self, req: &SimRequest) -> SimResponse {
        let title = self.title("Welcome");
        if let Some(body) = self.spec.params.pages.get(&req.path) {
            return self.reply(200, body.clone());
        }
        let nav = "<nav><a href=\"/\">Home</a> | <a href=\"/about\">About</a> | <a href=\"/blog\">Blog</a> | <a href=\"/contact\">Contact</a></nav>";
        let content = match req.path.as_str() {
            "/" | "/index.html" => format!("<h1>{}</h1>\n<p>Nothing to see here yet. Check back soon.</p>", escape_html(&title)),
            "/about" => "<h1>About</h1>\n<p>We build things. More details coming soon.</p>".into(),
            "/blog" => "<h1>Blog</h1>\n<ul>\n<li><a href=\"/blog/hello-world\">Hello world</a></li>\n</ul>".into(),
            "/blog/hello-world" => "<h1>Hello world</h1>\n<p>Our first post.</p>".into(),
            "/contact" => "<h1>Contact</h1>\n<p>Email us at info@example.invalid.</p>".into(),
            _ => return self.not_found(),
        };
        self.reply(200, page(&title, &format!("{nav}\n{content}")))
    }
}
