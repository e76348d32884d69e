from hyperdiff.cli import main

raise SystemExit(main())
