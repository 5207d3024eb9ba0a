# Harness de experimentos
