"""Print every table detected in one PDF, row by row. Usage: python scripts/print_tables.py article.pdf"""
import sys
from pathlib import Path

from app.core.config import configure_logging, settings
from app.models.corpus import DocumentEntry, Issue
from app.services.adapters import AdapterSet
from app.services.corpus import make_doc_id
from app.services.parse_utils import count_pages
from app.services.pipeline import RunContext, document_tables
from app.utils.hashing import sha256_file

configure_logging("WARNING")
path = Path(sys.argv[1])
entry = DocumentEntry(doc_id=make_doc_id(Path(path.name)), path=path, page_count=count_pages(path),
                      sha256=sha256_file(path))
issues: list[Issue] = []
with AdapterSet(settings) as adapters:
    tables = document_tables(entry, RunContext(cfg=settings, adapters=adapters), issues)
for table in tables:
    print(f"== {table.name} ({table.grid.table_class.value}, {table.grid.n_rows}x{table.grid.n_cols})")
    for row in table.matrix():
        print(" | ".join(row))
for issue in issues:
    print(f"issue [{issue.stage}] {issue.message}")
