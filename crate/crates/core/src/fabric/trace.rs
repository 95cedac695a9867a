use std::io::{self, Write};
use std::sync::{Arc, Mutex};

/// Cloneable handle so several fabric runs can append to one trace.
#[derive(Clone)]
pub struct SharedTrace(Arc<Mutex<Box<dyn Write + Send>>>);

impl SharedTrace {
    pub fn new(w: Box<dyn Write + Send>) -> Self {
        Self(Arc::new(Mutex::new(w)))
    }
}

impl Write for SharedTrace {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().expect("trace writer poisoned").write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.0.lock().expect("trace writer poisoned").flush()
    }
}
