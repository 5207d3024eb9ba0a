# Routers HTTP: health, simulations, cost
