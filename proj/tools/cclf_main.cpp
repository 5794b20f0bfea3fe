#include <cstdio>
int main() { std::puts("cclf: command-line interface under construction"); return 1; }
