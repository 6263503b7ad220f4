"""
Stage modules of the protective-put laboratory.

Each *_functions module holds the types and operations of one stage:
market model -> pricing -> payoff theory -> strategy tables -> utility -> reports
"""
