//! Test sources for the phase before LLM generation.

use std::path::Path;

use crate::model::ProgramModel;
use crate::sampler::Origin;

/// A test produced by a preceding source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecedingTest {
    pub test_id: String,
    pub source_text: String,
    pub origin: Origin,
}

/// Yields tests until exhausted. The session stops pulling once coverage
/// plateaus or the budget runs out.
pub trait PrecedingSource {
    fn next_test(&mut self) -> Option<PrecedingTest>;
}

/// An existing test suite: every `*.py` file of a directory, one test case
/// per file, in file-name order.
#[derive(Debug, Clone)]
pub struct ImportedSuite {
    tests: std::vec::IntoIter<PrecedingTest>,
}

impl ImportedSuite {
    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let mut files: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "py"))
            .collect();
        files.sort();
        let mut tests = Vec::with_capacity(files.len());
        for path in files {
            let stem = path.file_stem().expect("file has a name").to_string_lossy();
            tests.push(PrecedingTest {
                test_id: format!("imported_{stem}"),
                source_text: std::fs::read_to_string(&path)?,
                origin: Origin::Imported,
            });
        }
        Ok(Self { tests: tests.into_iter() })
    }

    pub fn from_tests(tests: Vec<PrecedingTest>) -> Self {
        Self { tests: tests.into_iter() }
    }
}

impl PrecedingSource for ImportedSuite {
    fn next_test(&mut self) -> Option<PrecedingTest> {
        self.tests.next()
    }
}

const CONSTANTS: [&str; 8] = ["None", "0", "1", "-1", "''", "'a'", "[]", "True"];

/// Calls each public module-level function with rotating constant
/// arguments, swallowing exceptions. Exhausted after one pass over the
/// constant pool.
#[derive(Debug, Clone)]
pub struct BaselineGenerator {
    module: String,
    functions: Vec<(String, usize)>,
    round: usize,
    index: usize,
    emitted: usize,
}

impl BaselineGenerator {
    pub fn new(model: &ProgramModel) -> Self {
        let functions = model
            .methods
            .iter()
            .filter(|m| m.class_name.is_none() && m.is_public && !m.qualified_name.contains(['.', '#']))
            .map(|m| (m.qualified_name.clone(), m.explicit_parameters().count()))
            .collect();
        Self { module: model.module_name(), functions, round: 0, index: 0, emitted: 0 }
    }
}

impl PrecedingSource for BaselineGenerator {
    fn next_test(&mut self) -> Option<PrecedingTest> {
        if self.functions.is_empty() || self.round >= CONSTANTS.len() {
            return None;
        }
        let (name, arity) = &self.functions[self.index];
        let args: Vec<&str> = (0..*arity).map(|i| CONSTANTS[(self.round + i) % CONSTANTS.len()]).collect();
        let source = format!(
            "import {module}\n\n\ndef test_baseline_{n}():\n    try:\n        {module}.{name}({args})\n    except Exception:\n        pass\n",
            module = self.module,
            n = self.emitted,
            args = args.join(", "),
        );
        let test = PrecedingTest {
            test_id: format!("baseline_{:04}", self.emitted),
            source_text: source,
            origin: Origin::Preceding,
        };
        self.emitted += 1;
        self.index += 1;
        if self.index == self.functions.len() {
            self.index = 0;
            self.round += 1;
        }
        Some(test)
    }
}
