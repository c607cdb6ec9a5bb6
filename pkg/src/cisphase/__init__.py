from .designer import ConstellationDesigner
from .scenario import Scenario, load_scenario, parse_scenario
