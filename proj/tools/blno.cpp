// placeholder main, replaced once the CLI runner lands
int main() { return 0; }
