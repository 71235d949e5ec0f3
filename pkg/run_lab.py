"""
Esecuzione rapida della CLI senza installare il pacchetto

    python run_lab.py diverge
    python run_lab.py simulate --model 2pl --a-schedule asc:0.5:2.0 --n-items 200 --replications 500
"""

import sys

from dotenv import load_dotenv

from cat_lab.cli.main import main

load_dotenv()

if __name__ == "__main__":
    sys.exit(main())
