from pathlib import Path

import pytest

from qrelax import (
    Database,
    load_database,
    load_similarity_config,
    parse_query,
    parse_rules_text,
    translate,
)

SCHEMA_CFG = """\
# medical record example
relation Ill(Name: string, Disease: string)
relation Treat(Name: string, Prescription: string)
"""

ILL_CSV = """\
Name,Disease
Mary,Cough
Mary,BrokenLeg
Mary,Sinusitis
Pete,Flu
"""

TREAT_CSV = """\
Name,Prescription
Mary,Inhaler
"""

RULES_TXT = """\
# treatment knowledge
Ill(x, Flu) -> Treat(x, Inhaler)
"""

DISEASE_PAIRS_CSV = """\
a,b,sim
Flu,Cough,0.8
Flu,BrokenLeg,0.4
Flu,Sinusitis,0.9
Cough,BrokenLeg,0.4
Cough,Sinusitis,0.7
Flu,Inhaler,0.5
"""

NAME_PAIRS_CSV = """\
a,b,sim
Mary,Pete,0.9
"""

SIM_BINDINGS = """\
default_sim 0.0
bind Disease pairs diseases.csv
bind Name pairs names.csv
"""


def write_example_tree(root: Path) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    (root / "schema.cfg").write_text(SCHEMA_CFG)
    (root / "Ill.csv").write_text(ILL_CSV)
    (root / "Treat.csv").write_text(TREAT_CSV)
    (root / "rules.txt").write_text(RULES_TXT)
    (root / "diseases.csv").write_text(DISEASE_PAIRS_CSV)
    (root / "names.csv").write_text(NAME_PAIRS_CSV)
    (root / "sim.cfg").write_text(SIM_BINDINGS)
    return root


@pytest.fixture(scope="session")
def example_dir(tmp_path_factory) -> Path:
    return write_example_tree(tmp_path_factory.mktemp("exampledb"))


@pytest.fixture(scope="session")
def db(example_dir) -> Database:
    return load_database(example_dir)


@pytest.fixture(scope="session")
def sim_cfg(example_dir, db):
    return load_similarity_config(example_dir / "sim.cfg", db.schemas)


@pytest.fixture(scope="session")
def rules(example_dir):
    return parse_rules_text((example_dir / "rules.txt").read_text())


@pytest.fixture
def running_query():
    return parse_query("Ill(x, Flu) & Ill(x, Cough)")


@pytest.fixture
def running_spj(running_query, db):
    return translate(running_query, db.schemas)
