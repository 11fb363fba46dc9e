//! `vdbms`: load a variational database, type check queries, translate them
//! to plain queries or SQL, and run them.

use std::fmt::Write as _;
use std::io::{self, Read as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use vdb_core::catalog::{count_schema_variants, parse_schema, CatalogError, VSchema};
use vdb_core::featexpr::Configuration;
use vdb_core::minimize::lift;
use vdb_core::pipeline::{generate_sql, model_group, prepare, PipelineOptions, Prepared, SqlMode};
use vdb_core::relengine::{self, EngineError, Strategy};
use vdb_core::storage::{
    configure_vdb, load_vdb, print_vtable, save_vdb, StorageError, VdbInstance, SCHEMA_FILE,
};
use vdb_core::translate::configure_query;
use vdb_core::typecheck::{render_type, TypeError};
use vdb_core::vra::{parse_query, VQuery};

#[derive(Parser)]
#[command(name = "vdbms", version, about = "Variational database engine")]
struct Cli {
    /// Database directory holding `schema.vschema` and one CSV per relation.
    #[arg(long, global = true, value_name = "DIR")]
    vdb: Option<PathBuf>,
    /// Schema file, for commands that need no data.
    #[arg(long, global = true, value_name = "FILE", conflicts_with = "vdb")]
    schema: Option<PathBuf>,
    /// Skip variation minimization.
    #[arg(long, global = true)]
    no_minimize: bool,
    /// Reject relations reached under an unsatisfiable context.
    #[arg(long, global = true)]
    strict_context: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct QuerySource {
    /// Query file; standard input when omitted.
    file: Option<PathBuf>,
    /// Query text given inline.
    #[arg(short = 'e', long = "query", conflicts_with = "file")]
    text: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Configure,
    Group,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PerVariant,
    PerGroup,
    Union,
    UnionVariants,
}

#[derive(Subcommand)]
enum Command {
    /// Type check a query and print its type.
    Check(QuerySource),
    /// Print the plain query for one configuration.
    Configure {
        /// Comma-separated enabled features.
        #[arg(long)]
        config: String,
        #[command(flatten)]
        source: QuerySource,
    },
    /// Print the distinct plain queries with their conditions.
    Group(QuerySource),
    /// Print the minimized query.
    Minimize {
        /// Move choices up instead of down.
        #[arg(long)]
        lift: bool,
        /// Print the applied rules.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        source: QuerySource,
    },
    /// Evaluate a query against the database.
    Run {
        #[arg(long, value_enum, default_value = "group")]
        strategy: StrategyArg,
        /// Print each evaluation unit's rows before merging.
        #[arg(long)]
        keep_parts: bool,
        #[command(flatten)]
        source: QuerySource,
    },
    /// Emit SQL for a query.
    Sql {
        #[arg(long, value_enum, default_value = "union")]
        mode: ModeArg,
        /// Write one file per statement into this directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[command(flatten)]
        source: QuerySource,
    },
    /// Count valid configurations and distinct schema variants.
    Variants,
    /// Write or print the plain database for one configuration.
    ConfigureDb {
        #[arg(long)]
        config: String,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Io(String),
    Type(TypeError),
    Syntax(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Type(_) => 2,
            Failure::Syntax(_) => 3,
        }
    }
}

impl From<TypeError> for Failure {
    fn from(e: TypeError) -> Self {
        Failure::Type(e)
    }
}

impl From<StorageError> for Failure {
    fn from(e: StorageError) -> Self {
        match e {
            StorageError::Io { .. } => Failure::Io(e.to_string()),
            other => Failure::Syntax(other.to_string()),
        }
    }
}

impl From<CatalogError> for Failure {
    fn from(e: CatalogError) -> Self {
        Failure::Syntax(e.to_string())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Type(t) => Failure::Type(t),
            other => Failure::Io(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

impl Cli {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            minimize: !self.no_minimize,
            strict_context: self.strict_context,
        }
    }

    fn load_schema(&self) -> Result<VSchema, Failure> {
        let path = match (&self.schema, &self.vdb) {
            (Some(file), _) => file.clone(),
            (None, Some(dir)) => dir.join(SCHEMA_FILE),
            (None, None) => return Err(Failure::Io("one of --vdb or --schema is required".into())),
        };
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(parse_schema(&text)?)
    }

    fn load_db(&self) -> Result<VdbInstance, Failure> {
        let dir = self
            .vdb
            .as_ref()
            .ok_or_else(|| Failure::Io("--vdb is required".into()))?;
        Ok(load_vdb(dir)?)
    }
}

impl QuerySource {
    fn read(&self) -> Result<VQuery, Failure> {
        let text = match (&self.text, &self.file) {
            (Some(t), _) => t.clone(),
            (None, Some(path)) => std::fs::read_to_string(path).map_err(io_err(path))?,
            (None, None) => {
                let mut buf = String::new();
                io::stdin()
                    .read_to_string(&mut buf)
                    .map_err(|e| Failure::Io(format!("stdin: {e}")))?;
                buf
            }
        };
        parse_query(text.trim()).map_err(|e| Failure::Syntax(e.to_string()))
    }
}

fn configuration(s: &VSchema, literal: &str) -> Result<Configuration, Failure> {
    let c = s.parse_configuration(literal)?;
    let valid = s
        .feature_model()
        .eval(&c)
        .map_err(|e| Failure::Syntax(e.to_string()))?;
    if !valid {
        return Err(Failure::Syntax(format!(
            "configuration {{{literal}}} does not satisfy the feature model {}",
            s.feature_model()
        )));
    }
    Ok(c)
}

fn prepared(cli: &Cli, s: &VSchema, source: &QuerySource) -> Result<Prepared, Failure> {
    Ok(prepare(&source.read()?, s, cli.options())?)
}

fn file_name(st: &vdb_core::sqlgen::SqlStatement) -> String {
    let digest = Sha256::digest(st.provenance.to_string().as_bytes());
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("{hex}.sql")
}

fn execute(cli: &Cli) -> Result<String, Failure> {
    let mut out = String::new();
    match &cli.command {
        Command::Check(source) => {
            let s = cli.load_schema()?;
            let p = prepared(cli, &s, source)?;
            writeln!(out, "OK: {}", render_type(&p.qtype)).unwrap();
        }
        Command::Configure { config, source } => {
            let s = cli.load_schema()?;
            let c = configuration(&s, config)?;
            let p = prepared(cli, &s, source)?;
            let pq = configure_query(&p.query, &c).map_err(|e| Failure::Syntax(e.to_string()))?;
            writeln!(out, "{pq}").unwrap();
        }
        Command::Group(source) => {
            let s = cli.load_schema()?;
            let p = prepared(cli, &s, source)?;
            let g = model_group(&p.query, &s).map_err(|e| Failure::Io(e.to_string()))?;
            write!(out, "{g}").unwrap();
        }
        Command::Minimize {
            lift: up,
            trace,
            source,
        } => {
            let s = cli.load_schema()?;
            let p = prepared(cli, &s, source)?;
            let q = if *up { lift(&p.query) } else { p.query.clone() };
            writeln!(out, "{q}").unwrap();
            if *trace {
                for st in &p.trace {
                    writeln!(out, "-- {}: weight {} -> {}", st.rule, st.before, st.after).unwrap();
                }
            }
        }
        Command::Run {
            strategy,
            keep_parts,
            source,
        } => {
            let db = cli.load_db()?;
            let p = prepared(cli, &db.schema, source)?;
            let strategy = match strategy {
                StrategyArg::Configure => Strategy::Configure,
                StrategyArg::Group => Strategy::Group,
            };
            if *keep_parts {
                let plan = relengine::plan(&p.query, &db.schema, strategy)?;
                for part in relengine::execute(&plan, &db)? {
                    let cols: Vec<&str> = part.columns.iter().map(|c| c.name.as_str()).collect();
                    writeln!(out, "-- part {} # {}", part.query, part.pc).unwrap();
                    writeln!(out, "-- columns ({})", cols.join(", ")).unwrap();
                    for (values, pc) in &part.rows {
                        let cells: Vec<String> = values.iter().map(ToString::to_string).collect();
                        writeln!(out, "-- {} # {pc}", cells.join(", ")).unwrap();
                    }
                }
            }
            out.push_str(&print_vtable(&relengine::run(&p.query, &db, strategy)?));
        }
        Command::Sql {
            mode,
            out: dir,
            source,
        } => {
            let s = cli.load_schema()?;
            let p = prepared(cli, &s, source)?;
            let mode = match mode {
                ModeArg::PerVariant => SqlMode::PerVariant,
                ModeArg::PerGroup => SqlMode::PerGroup,
                ModeArg::Union => SqlMode::Union,
                ModeArg::UnionVariants => SqlMode::UnionVariants,
            };
            let statements = generate_sql(&p, &s, mode).map_err(|e| Failure::Io(e.to_string()))?;
            match dir {
                None => statements
                    .iter()
                    .for_each(|st| out.push_str(&st.to_string())),
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
                    for st in &statements {
                        let path = dir.join(file_name(st));
                        std::fs::write(&path, st.to_string()).map_err(io_err(&path))?;
                        writeln!(out, "{}", path.display()).unwrap();
                    }
                }
            }
        }
        Command::Variants => {
            let s = cli.load_schema()?;
            let v = count_schema_variants(&s)?;
            writeln!(out, "satisfying configurations: {}", v.satisfying_configs).unwrap();
            writeln!(out, "distinct schemas: {}", v.distinct_schemas).unwrap();
        }
        Command::ConfigureDb { config, out: dir } => {
            let db = cli.load_db()?;
            let c = configuration(&db.schema, config)?;
            let plain = configure_vdb(&db, &c).map_err(|e| Failure::Syntax(e.to_string()))?;
            let mut deployed =
                VdbInstance::empty(parse_schema(&format!("features\n{}", plain.schema))?);
            for (name, table) in &plain.tables {
                for row in &table.rows {
                    deployed.insert(name, row.clone(), vdb_core::featexpr::FeatureExpr::TRUE)?;
                }
            }
            match dir {
                Some(dir) => {
                    save_vdb(&deployed, dir)?;
                    writeln!(out, "{}", dir.display()).unwrap();
                }
                None => {
                    for table in deployed.tables.values() {
                        out.push_str(&print_vtable(table));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            match &f {
                Failure::Type(e) => eprintln!("ERROR {e}"),
                Failure::Io(m) | Failure::Syntax(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
