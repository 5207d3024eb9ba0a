# Núcleo numérico del simulador y harness de experimentos
