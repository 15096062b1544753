import os

PROJECT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Configuration
CONFIG = {
    "ENCODING": "utf-8",
    "TEMPLATE_FILE": os.path.join(PROJECT_DIR, "problog_template.j2"),
    "LOG_DIR": os.environ.get("PDMN_LOG_DIR"),
    "LOG_FILE": "pdmn.log",
    "MAX_CHOICE_POINTS": 30,
    "DEFAULT_DECIMAL_PLACES": 15,
    "QUERY_VARIABLES": "XYZABCDEFGHIJKLMNOPQRSTUVW",
    "STDIN_MODEL_NAME": "workbook",
}
