from mirrorsim.main import main

main()
