# keeps the tests directory importable across test modules
