from contactwave.cli import main
import sys
sys.exit(main())
