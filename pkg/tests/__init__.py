# hapsnoma test suite
