//! Output directories: results are staged in a hidden sibling directory and
//! renamed into place only once every file has been written.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "RLLIM_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "rllim-output";

/// `flag`, else the configured directory, else `<root>/<command>`.
pub fn resolve_output_dir(flag: Option<&Path>, configured: Option<&Path>, command: &str) -> PathBuf {
    if let Some(p) = flag.or(configured) {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
    root.join(command)
}

#[derive(Debug)]
pub struct Staging {
    dir: tempfile::TempDir,
    target: PathBuf,
}

impl Staging {
    pub fn new(target: &Path) -> anyhow::Result<Self> {
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&parent).with_context(|| format!("cannot create {}", parent.display()))?;
        let dir = tempfile::Builder::new()
            .prefix(".rllim-staging-")
            .tempdir_in(&parent)
            .with_context(|| format!("cannot stage output under {}", parent.display()))?;
        Ok(Staging {
            dir,
            target: target.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn create(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("cannot create {name}"))?))
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        use std::io::Write;
        let mut f = self.create(name)?;
        f.write_all(contents.as_ref())?;
        f.flush()?;
        Ok(())
    }

    /// Moves the staged directory to the target, replacing any previous one.
    pub fn commit(self) -> anyhow::Result<PathBuf> {
        let staged = self.dir.keep();
        let target = self.target;
        let mut backup = None;
        if target.exists() {
            let old = staged.with_extension("old");
            std::fs::rename(&target, &old).with_context(|| format!("cannot move aside {}", target.display()))?;
            backup = Some(old);
        }
        if let Err(e) = std::fs::rename(&staged, &target) {
            if let Some(old) = &backup {
                let _ = std::fs::rename(old, &target);
            }
            let _ = std::fs::remove_dir_all(&staged);
            return Err(e).with_context(|| format!("cannot promote output to {}", target.display()));
        }
        if let Some(old) = backup {
            std::fs::remove_dir_all(old)?;
        }
        Ok(target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_replaces_previous_output() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("out");
        let s = Staging::new(&target).unwrap();
        s.write("a.txt", "one").unwrap();
        assert!(!target.exists());
        s.commit().unwrap();
        assert_eq!(std::fs::read_to_string(target.join("a.txt")).unwrap(), "one");

        let s = Staging::new(&target).unwrap();
        s.write("sub/b.txt", "two").unwrap();
        s.commit().unwrap();
        assert!(!target.join("a.txt").exists());
        assert_eq!(std::fs::read_to_string(target.join("sub/b.txt")).unwrap(), "two");
        let leftovers: Vec<_> = std::fs::read_dir(root.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn dropped_staging_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("out");
        {
            let s = Staging::new(&target).unwrap();
            s.write("a.txt", "x").unwrap();
        }
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn explicit_flag_wins() {
        let p = resolve_output_dir(Some(Path::new("/a")), Some(Path::new("/b")), "train");
        assert_eq!(p, PathBuf::from("/a"));
        assert_eq!(resolve_output_dir(None, Some(Path::new("/b")), "train"), PathBuf::from("/b"));
    }
}
