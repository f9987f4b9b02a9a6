class Klsp4Exception(Exception):
    """Base class for exceptions in this module."""
    pass

class ConfigurationException(Klsp4Exception):
    """Exception raised for configuration errors."""
    pass

class InvalidInput(Klsp4Exception, ValueError):
    """Raised when arguments fall outside an operation's domain."""
    def __init__(self, message="INVALID_INPUT"):
        super().__init__(message)

class NotInvertible(InvalidInput):
    """Raised when a residue has no inverse modulo its prime power."""
    def __init__(self, message="Residue is not a unit"):
        super().__init__(message)

class InadmissibleCell(InvalidInput):
    """Raised when (r, s) is outside the admissible range of a Weyl cell."""
    def __init__(self, message="Inadmissible cell parameters"):
        super().__init__(message)

class BudgetExceeded(Klsp4Exception):
    """Raised when an enumeration would exceed the term budget."""
    def __init__(self, required: int, budget: int, message: str = ""):
        self.required = required
        self.budget = budget
        super().__init__(message or f"Enumeration needs {required} terms, budget is {budget}")

class IdentityViolation(Klsp4Exception):
    """Raised when an exact identity that must hold does not."""
    def __init__(self, message="Identity violated"):
        super().__init__(message)
