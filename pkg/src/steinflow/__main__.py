from steinflow.cli import main

raise SystemExit(main())
