use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{Graph, Weight};
use crate::io::{numbered_lines, parse_edge_line, parse_header};

/// A source of `(u, v, w)` records that yields the same sequence on every pass.
pub trait EdgeStream {
    fn n(&self) -> usize;
    /// Completed passes so far.
    fn passes(&self) -> usize;
    fn pass(&mut self, f: &mut dyn FnMut(usize, usize, Weight)) -> Result<()>;
}

#[derive(Clone, Debug)]
pub struct VecStream {
    n: usize,
    edges: Vec<(usize, usize, Weight)>,
    passes: usize,
}

impl VecStream {
    pub fn new(n: usize, edges: Vec<(usize, usize, Weight)>) -> Self {
        VecStream { n, edges, passes: 0 }
    }

    pub fn from_graph(g: &Graph) -> Self {
        let edges = (0..g.m()).map(|e| {
            let (u, v) = g.endpoints(e);
            (u, v, g.weight(e))
        });
        VecStream::new(g.n(), edges.collect())
    }
}

impl EdgeStream for VecStream {
    fn n(&self) -> usize {
        self.n
    }

    fn passes(&self) -> usize {
        self.passes
    }

    fn pass(&mut self, f: &mut dyn FnMut(usize, usize, Weight)) -> Result<()> {
        for &(u, v, w) in &self.edges {
            f(u, v, w);
        }
        self.passes += 1;
        Ok(())
    }
}

/// Re-reads an edge-list file on every pass.
#[derive(Clone, Debug)]
pub struct FileStream {
    path: PathBuf,
    n: usize,
    m: usize,
    passes: usize,
}

impl FileStream {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut lines = numbered_lines(BufReader::new(File::open(&path)?));
        let (lno, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing `n m` header".into() })?;
        let (n, m) = parse_header(&header?, lno)?;
        Ok(FileStream { path, n, m, passes: 0 })
    }

    pub fn declared_edges(&self) -> usize {
        self.m
    }
}

impl EdgeStream for FileStream {
    fn n(&self) -> usize {
        self.n
    }

    fn passes(&self) -> usize {
        self.passes
    }

    fn pass(&mut self, f: &mut dyn FnMut(usize, usize, Weight)) -> Result<()> {
        let mut count = 0;
        for (lno, line) in numbered_lines(BufReader::new(File::open(&self.path)?)).skip(1) {
            let (u, v, w) = parse_edge_line(&line?, lno, self.n)?;
            f(u, v, w);
            count += 1;
        }
        if count != self.m {
            return Err(Error::Dimension { expected: self.m, found: count });
        }
        self.passes += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    fn collect(s: &mut dyn EdgeStream) -> Vec<(usize, usize, Weight)> {
        let mut out = vec![];
        s.pass(&mut |u, v, w| out.push((u, v, w))).unwrap();
        out
    }

    #[test]
    fn passes_repeat_and_are_counted() {
        let g = gen::gnp(30, 0.2, Some(5), 1).unwrap();
        let mut s = VecStream::from_graph(&g);
        let a = collect(&mut s);
        let b = collect(&mut s);
        assert_eq!(a, b);
        assert_eq!(a.len(), g.m());
        assert_eq!(s.passes(), 2);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        crate::io::write_edge_list(&g, std::fs::File::create(&p).unwrap()).unwrap();
        let mut fs = FileStream::open(&p).unwrap();
        assert_eq!(fs.n(), 30);
        assert_eq!(collect(&mut fs), a);
        assert_eq!(collect(&mut fs), a);
        assert_eq!(fs.passes(), 2);
    }

    #[test]
    fn empty_stream() {
        let mut s = VecStream::new(3, vec![]);
        assert!(collect(&mut s).is_empty());
    }
}
