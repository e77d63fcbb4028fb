"""Always prints 5 data rows, one short of a 5-iteration run."""
import sys

if sys.argv[1:] == ["--check"]:
    print("pphpc-candidate 1")
    sys.exit(0)
print("total_prey,total_predators,total_food,mean_energy_prey,mean_energy_predators,mean_c")
for _ in range(5):
    print("1,1,1,1.000000,1.000000,1.000000")
